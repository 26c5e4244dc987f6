from setuptools import setup, find_packages

setup(
    name="semnoma",
    version="0.1.0",
    packages=find_packages(exclude=["tests", "tests.*", "examples", "examples.*"]),
    install_requires=[
        "numpy>=1.24.0",
        "scipy>=1.11.0",
        "pandas>=2.0.0",
        "pydantic>=2.4.2",
        "python-dotenv>=1.0.0",
        "pyyaml>=6.0",
    ],
    extras_require={
        "dev": [
            "pytest>=7.4.0",
            "pytest-cov>=4.1.0",
            "black>=23.3.0",
            "isort>=5.12.0",
            "flake8>=6.0.0",
            "pre-commit>=3.3.2",
        ],
    },
    entry_points={
        "console_scripts": [
            "semnoma=semnoma.main:main",
        ],
    },
    python_requires=">=3.9",
    description="Semantic-versus-bit rate regions and ergodic resource management for two-user uplink NOMA",
    keywords="noma, semantic communication, resource allocation, lagrangian duality",
    classifiers=[
        "Programming Language :: Python :: 3",
        "License :: OSI Approved :: MIT License",
        "Operating System :: OS Independent",
    ],
)
