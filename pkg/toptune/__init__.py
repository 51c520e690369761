from toptune.config.package import PACKAGE_VERSION

__version__ = PACKAGE_VERSION
