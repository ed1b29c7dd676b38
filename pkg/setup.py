from setuptools import setup, find_packages  # type: ignore

setup(
    name="PolyPade",
    version="0.1",
    description="Rational approximation and interpolation on the polydisk",
    long_description=open("README.md").read(),
    long_description_content_type="text/markdown",
    classifiers=[  # Optional
        "Development Status :: 3 - Beta",
        "License :: OSI Approved :: MIT License",
        "Programming Language :: Python :: 3",
        "Topic :: Scientific/Engineering :: Mathematics",
    ],
    python_requires=">=3.9, <4",
    platforms=["any"],
    license="MIT",
    packages=find_packages(exclude=["tests", "examples", "examples.*"]),
    install_requires=["numpy", "scipy"],
    entry_points={"console_scripts": ["polypade=polypade.util.cli:main"]},
)
