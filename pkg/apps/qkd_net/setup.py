from setuptools import setup, find_packages

setup(
    name="qkd_net",
    version="0.1.0",
    packages=find_packages(where="src"),
    package_dir={"": "src"},
    install_requires=[
        "networkx",
        "numpy",
        "pandas",
        "pydantic",
        "pydantic-settings",
        "python-dotenv",
        "pyyaml",
        "rich",
        "scipy",
    ],
    python_requires=">=3.9",
)
