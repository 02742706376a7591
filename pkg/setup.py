import sarmanov_reinsurance

from setuptools import setup

setup(
  name='sarmanov_reinsurance',
  version=sarmanov_reinsurance.__version__,
  description='Stop-loss reinsurance aggregation under Sarmanov dependence',
  long_description='Closed-form distribution, VaR, TVaR, TVaR allocation and default analysis of two stop-loss treaties on dependent mixed Erlang risks',
  packages=[
    'sarmanov_reinsurance'
  ],
  package_data={
    'sarmanov_reinsurance': ['fixtures/*.json']
  },
  url='https://github.com/trinaryouroboros/sarmanov_reinsurance',
  author='Shawn Qureshi',
  author_email='shawn_q@email.com',
  license='Apache',
  install_requires=[
    'numpy',
    'scipy',
    'pandas',
    'dask',
    'pydantic>=2'
  ],
  extras_require={
    'test': [
      'pytest',
      'hypothesis'
    ]
  },
  python_requires='>=3.9',
  classifiers=[
    'Development Status :: 2 - Pre-Alpha',
    'Intended Audience :: Financial and Insurance Industry',
    'Intended Audience :: Science/Research',
    'Topic :: Scientific/Engineering :: Mathematics',
    'Programming Language :: Python :: 3',
    'Programming Language :: Python :: 3 :: Only',
    'Programming Language :: Python :: 3.9',
    'Programming Language :: Python :: 3.10',
    'Programming Language :: Python :: 3.11'
  ],
  keywords='cli actuarial reinsurance stop-loss sarmanov fgm mixed-erlang tvar capital-allocation',
  entry_points={
    'console_scripts': [
      'sarmanov-reinsurance = sarmanov_reinsurance.__main__:main',
    ]
  }
)
