# setup.py
from setuptools import setup, find_packages

setup(
    name="dicke_feedback",
    version="0.1.0",
    packages=find_packages(exclude=["tests", "tests.*", "examples", "examples.*"]),
    package_data={"dicke_feedback.recipes": ["*.yaml"]},
    install_requires=[
        "numpy>=1.22",
        "scipy>=1.9",
        "mpmath>=1.2",
        "matplotlib>=3.5",
        "pyyaml>=6.0.0"
    ],
    extras_require={
        "test": ["pytest>=7.0"],
    },
    entry_points={
        "console_scripts": ["dicke-feedback=dicke_feedback.main:main"],
    },
    description="Feedback-controlled Dicke model: spectra, critical exponents, quantum trajectories",
    long_description=open("readme.md").read(),
    long_description_content_type="text/markdown",
    classifiers=[
        "Development Status :: 3 - Alpha",
        "Intended Audience :: Science/Research",
        "License :: OSI Approved :: MIT License",
        "Programming Language :: Python :: 3.9",
        "Topic :: Scientific/Engineering :: Physics",
    ],
    python_requires=">=3.9",
)
