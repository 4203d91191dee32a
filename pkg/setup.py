# Filename    : setup.py
# Description : starcert - uncertainty estimation for star-convex instance segmentation

from setuptools import setup, find_packages
from sys import path

path.insert(0, '.')

NAME = "starcert"

if __name__ == "__main__":

    setup(
        name=NAME,
        version='0.1.0',
        license='ASLv2',
        packages=find_packages(exclude=['tests', 'tests.*']),
        include_package_data=True,
        package_dir={NAME: NAME},
        package_data={NAME: ['templates/*.svg.j2']},
        description="starcert - certainty scores for star-convex instance segmentation samples",
        python_requires='>=3.8',
        install_requires=['numpy>=1.22', 'scipy>=1.7', 'scikit-image', 'Jinja2', 'python-dateutil', 'unidecode'],
        entry_points={
            'console_scripts': ['starcert = starcert.runcli:main'],
        },
        zip_safe=False,
    )
