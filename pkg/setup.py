from setuptools import setup

try:
  import numpy
except:
  print('Numpy is required to run installation')


setup(name='hybridoc',
      version='0.1.0',
      description='Optimal control of non-classical mechanical states in a hybrid '
                  'atom-cavity-oscillator system',
      license='MIT',
      scripts = ['bin/hybridoc'],
      packages = ['hybridoc'],
      python_requires='>=3.7',
      install_requires=[
        'h5py>=2.2.0',
        'numpy',
        'scipy>=1.6',
        'pandas'],
      extras_require={'test': ['pytest']},
      keywords = ['Optimal-control', 'Optomechanics', 'Cavity-QED', 'Open-quantum-systems']
      )
