PACKAGE_NAME = 'toptune'
PACKAGE_DESCRIPTION = 'Parameter-efficient tuning laboratory for seq2seq task-oriented semantic parsers'
PACKAGE_VERSION = '0.3.0'
PACKAGE_AUTHOR = 'Anant Navadiya'
PACKAGE_AUTHOR_EMAIL = 'contact@anantnavadiya.com'
PACKAGE_LICENSE = 'MIT'
