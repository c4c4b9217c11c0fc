from setuptools import setup, find_packages

setup(
    name="cmibound",
    version="1.0.0",
    description="Exact and Monte Carlo information-theoretic generalization bounds, including the hypothesis-testing bound for Langevin dynamics",
    long_description=open("README.md").read(),
    long_description_content_type="text/markdown",
    packages=find_packages(exclude=["tests", "tests.*"]),
    install_requires=[
        "numpy>=1.24.0,<2.0.0",
        "scipy>=1.10.0",
        "sympy>=1.11.1",
        "flask>=2.3.0,<3.0.0",
        "Werkzeug>=2.3.0,<3.0.0",
        "python-dotenv>=1.0.0",
        "psutil>=5.9.0",
        "orjson>=3.9.0",
    ],
    extras_require={
        "test": ["pytest>=7.0"],
    },
    classifiers=[
        "Intended Audience :: Science/Research",
        "License :: OSI Approved :: MIT License",
        "Programming Language :: Python :: 3",
        "Topic :: Scientific/Engineering :: Mathematics",
        "Topic :: Scientific/Engineering :: Artificial Intelligence",
    ],
    entry_points={
        'console_scripts': [
            'cmibound-cli=ui.cli:main',
        ],
    },
    python_requires='>=3.8',
)
