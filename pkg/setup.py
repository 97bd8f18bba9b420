from setuptools import setup, find_packages

with open("README.md", "r", encoding="utf-8") as fh:
    long_description = fh.read()

with open("requirements.txt", "r", encoding="utf-8") as fh:
    requirements = [
        line.split("#", 1)[0].strip()
        for line in fh.read().splitlines()
        if line.split("#", 1)[0].strip()
    ]

setup(
    name="airdrop_sybil",
    version="0.1.0",
    description="Airdrop Sybil detection from DApp activity similarity and token-transfer patterns",
    long_description=long_description,
    long_description_content_type="text/markdown",
    packages=find_packages(exclude=["tests", "examples", "examples.*"]),
    classifiers=[
        "Programming Language :: Python :: 3",
        "License :: OSI Approved :: MIT License",
        "Operating System :: OS Independent",
    ],
    python_requires=">=3.8",
    install_requires=[r for r in requirements if not r.startswith(("hypothesis", "pytest"))],
    extras_require={"test": ["hypothesis>=6.0", "pytest>=7.0"]},
    entry_points={
        "console_scripts": [
            "airdrop-sybil=airdrop_sybil.main:main",
        ],
    },
)
