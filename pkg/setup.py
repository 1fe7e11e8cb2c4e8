from setuptools import find_packages, setup

from pcof import __version__

classifiers = """
Development Status :: 4 - Beta
Environment :: Console
Intended Audience :: Science/Research
Topic :: Scientific/Engineering
Topic :: Scientific/Engineering :: Mathematics
Programming Language :: Python :: 3.8
Programming Language :: Python :: 3.9
Programming Language :: Python :: 3.10
Operating System :: POSIX :: Linux
""".strip().split('\n')

setup(name='pcof',
      version=__version__,
      description='Aligned Precoded Compute-and-Forward for the 2x2x2 MIMO interference '
                  'channel: lattice reduction, finite-field network precoding and '
                  'Monte Carlo sum-rate sweeps',
      classifiers=classifiers,
      install_requires=[
          'numpy>=1.22,<2.0',
          'scipy>=1.8,<1.12'
      ],
      python_requires='>=3.8, <3.12',
      test_suite='pcof.tests',
      packages=find_packages(),
      package_data={'pcof': ['resources/profiles/*/*.json', 'tests/test_config/*.json']},
      include_package_data=True,
      scripts=['bin/pcof-sim']
)
