# Utility subpackage
