from setuptools import setup, find_packages

setup(
    name="lossnet",
    version="0.1.0",
    packages=find_packages(exclude=["tests", "tests.*"]),
    py_modules=["config"],
    install_requires=[
        "python-dotenv>=1.0.0",
        "pyyaml>=6.0.1",
        "rich>=13.5.3",
        "jinja2>=3.1.0",
        "matplotlib>=3.5.0",
        "pydantic>=2.0.0",
        "numpy>=1.24",
        "pandas>=2.0",
    ],
    extras_require={"test": ["pytest>=7.0.0"]},
    python_requires=">=3.10",
    author="lossnet developers",
    description="Congestive vs. non-congestive packet-loss datasets, classifiers and policy replay",
    classifiers=[
        "Programming Language :: Python :: 3",
        "License :: OSI Approved :: MIT License",
        "Operating System :: OS Independent",
    ],
    entry_points={
        "console_scripts": [
            "lossnet=cli.main:main",
        ],
    },
)
