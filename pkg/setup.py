from setuptools import setup
from knav.version import _versionstring

try:
    from setuptools import find_namespace_packages
except ImportError:
    from setuptools import PEP420PackageFinder

    find_namespace_packages = PEP420PackageFinder.find

setup(
    name="KoopNav",
    version=_versionstring,
    packages=find_namespace_packages(
        include=[
            "knav*",
        ]
    ),
    install_requires=[
        "numpy>=1.20",
        "scipy>=1.7",
    ],
    entry_points={"console_scripts": ["knav=knav.__main__:main"]},
    license="GAGPL",
    python_requires=">=3.8",
)
