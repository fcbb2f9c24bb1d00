from setuptools import setup, find_packages

requirements = [
    "numpy>=1.17",
    "scipy",
    "rich",
    "pyyaml",
]

VERSION = {}
with open("ltuscore/version.py", "r") as version_file:
    exec(version_file.read(), VERSION)

setup(
    name="ltuscore",
    version=VERSION["__version__"],
    description=
    "LtuScore: Leave-Two-Unlabeled Membership Inference Privacy and Utility Scorer",
    long_description=open("README.md", "r", encoding="utf-8").read(),
    long_description_content_type="text/markdown",
    classifiers=[
        "Intended Audience :: Developers",
        "Intended Audience :: Science/Research",
        "Programming Language :: Python :: 3",
        "Topic :: Scientific/Engineering :: Artificial Intelligence",
        "Topic :: Security",
    ],
    license="Apache 2.0",
    packages=find_packages(include=["ltuscore", "ltuscore.*"]),
    install_requires=requirements,
    python_requires=">=3.8.0",
    entry_points={"console_scripts": ["ltuscore=ltuscore.cli:main"]},
    extras_require={},
)
