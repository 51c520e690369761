from setuptools import setup, find_packages

from toptune.config.package import PACKAGE_NAME, PACKAGE_VERSION, PACKAGE_DESCRIPTION, PACKAGE_AUTHOR, \
    PACKAGE_AUTHOR_EMAIL, PACKAGE_LICENSE

setup(
    name=PACKAGE_NAME,
    version=PACKAGE_VERSION,
    description=PACKAGE_DESCRIPTION,
    author=PACKAGE_AUTHOR,
    author_email=PACKAGE_AUTHOR_EMAIL,
    packages=find_packages(exclude=['tests', 'tests.*']),
    include_package_data=True,
    package_data={
        'toptune.datagen': ['grammars/*.yaml'],
        'toptune.harness': ['templates/*.j2'],
    },
    python_requires='>=3.9',
    install_requires=[
        'Jinja2==3.1.6',
        'markdown-it-py==3.0.0',
        'MarkupSafe==3.0.2',
        'mdurl==0.1.2',
        'numpy>=1.24',
        'Pygments==2.19.1',
        'python-slugify==8.0.4',
        'PyYAML==6.0.2',
        'rich==14.0.0',
        'text-unidecode==1.3',
    ],
    extras_require={
        'test': ['pytest>=7.4'],
    },
    entry_points={
        'console_scripts': [
            'toptune=toptune.main:main',
        ],
    },
    license=PACKAGE_LICENSE,
)
