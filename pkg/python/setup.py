"""
Setup script for the ringberry Python package.
"""

from setuptools import setup, find_packages
import os


def read_readme():
    path = os.path.join(os.path.dirname(__file__), "..", "README.md")
    if not os.path.exists(path):
        return ""
    with open(path, "r", encoding="utf-8") as fh:
        return fh.read()


setup(
    name="ringberry",
    version="1.0.0",
    author="ringberry developers",
    description="Berry phase of magnetically trapped atoms in time-orbiting ring traps",
    long_description=read_readme(),
    long_description_content_type="text/markdown",
    packages=find_packages(exclude=["tests"]),
    classifiers=[
        "Development Status :: 4 - Beta",
        "Intended Audience :: Science/Research",
        "Topic :: Scientific/Engineering :: Physics",
        "License :: OSI Approved :: MIT License",
        "Programming Language :: Python :: 3",
        "Programming Language :: Python :: 3.8",
        "Programming Language :: Python :: 3.9",
        "Programming Language :: Python :: 3.10",
        "Programming Language :: Python :: 3.11",
        "Operating System :: OS Independent",
    ],
    python_requires=">=3.8",
    install_requires=[
        "numpy>=1.21.0",
        "pandas>=1.5.0",
        "scipy>=1.7.0",
    ],
    extras_require={
        "dev": [
            "pytest>=7.0.0",
            "pytest-cov>=3.0.0",
            "hypothesis>=6.0.0",
            "black>=22.0.0",
            "flake8>=4.0.0",
            "mypy>=0.950",
            "pre-commit>=2.17.0",
        ],
    },
    entry_points={
        "console_scripts": [
            "ringberry=ringberry.cli:main",
        ],
    },
    include_package_data=True,
    package_data={
        "ringberry": ["data/*.cfg"],
    },
    zip_safe=False,
)
