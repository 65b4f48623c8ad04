"""
Setup file for itsus, integrated tempering sampling combined with umbrella sampling.
"""

from pathlib import Path

from setuptools import setup

README = open(Path(__file__).parent / 'README.rst').read()
CHANGELOG = open(Path(__file__).parent / 'CHANGELOG.rst').read()


setup(
    name='itsus-sampling',
    description='Integrated tempering and umbrella sampling toolkit on analytic surfaces',
    version='0.1.1',
    author='itsus developers',
    long_description=f'{README}\n\n{CHANGELOG}',
    long_description_content_type='text/x-rst',
    include_package_data=True,
    zip_safe=False,
    license="AGPL 3.0",
    keywords='Django enhanced-sampling umbrella-sampling WHAM integrated-tempering',
    classifiers=[
        'Development Status :: 3 - Alpha',
        'Framework :: Django',
        'Framework :: Django :: 3.2',
        'Intended Audience :: Science/Research',
        'License :: OSI Approved :: GNU Affero General Public License v3 or later (AGPLv3+)',
        'Natural Language :: English',
        'Programming Language :: Python :: 3',
        'Programming Language :: Python :: 3.8',
        'Topic :: Scientific/Engineering :: Chemistry',
    ],
    python_requires='>=3.8',
    install_requires=[
        'Django~=3.2',
        'numpy>=1.20',
        'scipy>=1.6',
        'PyYAML>=5.4',
    ],
    extras_require={
        'tests': [
            'mock',
            'factory_boy',
        ],
    },
    packages=[
        'itsus',
        'itsus.management',
        'itsus.management.commands',
        'itsus.settings',
    ],
    package_data={
        'itsus': ['presets/*.yml', 'golden/v1/*.yml'],
    },
    entry_points={
        'console_scripts': [
            'itsus = itsus.main:main',
        ],
    },
)
