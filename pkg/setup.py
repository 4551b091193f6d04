import re
from pathlib import Path

import setuptools

HERE = Path(__file__).parent
TEST_REQUIREMENTS = {"pytest"}


def package_metadata() -> dict[str, str]:
    source = (HERE / "lsmrac" / "__init__.py").read_text(encoding="utf-8")
    found = dict(re.findall(r'^(__\w+__)\s*=\s*"([^"]*)"', source, flags=re.M))
    missing = {"__version__", "__author__", "__url__"} - found.keys()
    if missing:
        raise ValueError(f"lsmrac/__init__.py lacks {sorted(missing)}")
    return found


def split_requirements(path: Path = HERE / "requirements.txt") -> tuple[list[str], list[str]]:
    """Runtime and test requirements, in file order."""
    if not path.exists():
        print(f"Warning: '{path.name}' not found. No dependencies will be installed.")
        return [], []
    lines = [
        line.strip()
        for line in path.read_text(encoding="utf-8").splitlines()
        if line.strip() and not line.lstrip().startswith("#")
    ]
    name = lambda req: re.split(r"[<>=!~\[ ]", req, maxsplit=1)[0].lower()
    runtime = [req for req in lines if name(req) not in TEST_REQUIREMENTS]
    tests = [req for req in lines if name(req) in TEST_REQUIREMENTS]
    return runtime, tests


metadata = package_metadata()
runtime_requirements, test_requirements = split_requirements()
readme = HERE / "README.md"

setuptools.setup(
    name="lsmrac",
    url=metadata["__url__"],
    version=metadata["__version__"],
    author=metadata["__author__"],
    description="Least-squares adaptive tracking control for multi-robot teams, with collision avoidance",
    long_description=readme.read_text(encoding="utf-8") if readme.exists() else "",
    long_description_content_type="text/markdown",
    packages=setuptools.find_packages(exclude=("tests*", "configs*")),
    classifiers=[
        "Development Status :: 3 - Alpha",
        "Programming Language :: Python :: 3",
        "License :: OSI Approved :: MIT License",
        "Intended Audience :: Science/Research",
        "Topic :: Scientific/Engineering",
    ],
    python_requires=">=3.9",
    install_requires=runtime_requirements,
    extras_require={"test": test_requirements},
    entry_points={
        "console_scripts": [
            "lsmrac-sim=lsmrac_sim.main:run",
        ],
    },
)
