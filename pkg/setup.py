# -*- coding: utf-8 -*-

try:
    from setuptools import setup
except ImportError:
    from distutils.core import setup

import os.path

readme = ''
here = os.path.abspath(os.path.dirname(__file__))
readme_path = os.path.join(here, 'README.md')
if os.path.exists(readme_path):
    with open(readme_path, 'rb') as stream:
        readme = stream.read().decode('utf8')

setup(
    long_description=readme,
    long_description_content_type='text/markdown',
    name='sfakit',
    version='0.1.0',
    description='Strong-field approximation toolkit: ATI, HHG, quantum orbits, NSDI, quenched molecules and '
                'solid-state HHG',
    python_requires='==3.*,>=3.8.0',
    author='sfakit developers',
    license='GPL-3.0-or-later',
    keywords='strong-field scientific attosecond high-harmonic simulation',
    packages=[
        'sfakit', 'sfakit.calculation_tools', 'sfakit.general_settings', 'sfakit.input_output',
        'sfakit.main_modules', 'sfakit.model_components', 'sfakit.visuals'
    ],
    package_dir={"": "."},
    package_data={
        "sfakit": ["general_settings/*.yml", "visuals/templates/*.j2"],
    },
    entry_points={
        'console_scripts': ['sfakit = sfakit.input_output.cli:main'],
    },
    install_requires=[
        'attrs>=20.3.0', 'matplotlib>=3.3.4',
        'numpy>=1.20.1', 'pandas>=1.5.0', 'pint>=0.16.1',
        'plotly>=4.14.3', 'pyyaml>=5.4.1',
        'scipy>=1.6.0', 'jinja2>=3.0.1',
    ],
    extras_require={"dev": ["pytest>=5.2.0", "isort>=5.8.0", "mypy>=0.812"]},

)
