"""Setup script for restirmcmc"""
from setuptools import setup, find_packages
from pathlib import Path

# Read the README file
readme_file = Path(__file__).parent / "README.md"
long_description = ""
if readme_file.exists():
    long_description = readme_file.read_text(encoding='utf-8')

setup(
    name="restirmcmc",
    version="0.1.0",
    author="Harsh",
    author_email="you@example.com",
    description="Spatiotemporal reservoir resampling with Metropolis-Hastings sample mutations",
    long_description=long_description,
    long_description_content_type="text/markdown",
    url="https://github.com/yourusername/restirmcmc",
    project_urls={
        "Bug Tracker": "https://github.com/yourusername/restirmcmc/issues",
        "Source Code": "https://github.com/yourusername/restirmcmc",
    },
    packages=find_packages(include=["restirmcmc", "restirmcmc.*"]),
    classifiers=[
        "Development Status :: 4 - Beta",
        "Environment :: Console",
        "Intended Audience :: Science/Research",
        "License :: OSI Approved :: MIT License",
        "Operating System :: OS Independent",
        "Programming Language :: Python :: 3",
        "Programming Language :: Python :: 3.9",
        "Programming Language :: Python :: 3.10",
        "Programming Language :: Python :: 3.11",
        "Topic :: Multimedia :: Graphics :: 3D Rendering",
        "Topic :: Scientific/Engineering :: Mathematics",
    ],
    python_requires=">=3.9",
    install_requires=[
        "click>=8.0",
        "rich>=12.0",
        "numpy>=1.22",
        "scipy>=1.8",
        "pandas>=1.3",
        "psutil>=5.8.0",
    ],
    extras_require={
        "dev": [
            "pytest>=6.0",
            "pytest-cov>=2.12.0",
            "pytest-timeout>=1.4.0",
            "black>=21.0",
            "flake8>=3.9.0",
            "mypy>=0.910",
        ]
    },
    entry_points={
        "console_scripts": [
            "restirmcmc=restirmcmc.cli:main",
        ],
    },
)
