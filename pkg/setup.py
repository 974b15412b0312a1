from setuptools import setup

with open("README.md", "r") as fh:
    long_description = fh.read()

setup(
    name='eagle-delay',
    version='0.1.0',
    packages=['eagle', 'eagle.autodiff', 'eagle.data', 'eagle.model', 'eagle.training', 'eagle.explain'],
    license='MIT License',
    description='Leakage-safe delivery-delay prediction on supply graphs with a numpy tensor engine',
    long_description=long_description,
    long_description_content_type='text/markdown',
    python_requires='>=3.8',
    install_requires=[
        'numpy>=1.20',
        'pandas>=1.3',
    ],
    extras_require={
        'test': ['pytest>=7.0'],
    },
    entry_points={
        'console_scripts': [
            'eagle = eagle.cli:main',
        ],
    },
    classifiers=[
        'Programming Language :: Python :: 3',
        'License :: OSI Approved :: MIT License',
        'Operating System :: OS Independent'
    ]
)
