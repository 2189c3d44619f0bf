from setuptools import find_packages, setup

setup(
    name="hlps",
    version="0.1.0",
    description="Hierarchical RL with Gaussian-process subgoal representations on point mazes",
    packages=find_packages(where="src"),
    package_dir={"": "src"},
    package_data={"hlps.envs": ["layouts/*.txt"]},
    python_requires=">=3.10",
    install_requires=[
        "torch>=2.1",
        "numpy>=1.24",
        "scipy>=1.10",
        "matplotlib>=3.7",
        "tqdm>=4.65",
        "tomli>=1.1; python_version<'3.11'",
    ],
    extras_require={"test": ["pytest>=7"]},
    entry_points={"console_scripts": ["hlps=hlps.cli:main"]},
)
