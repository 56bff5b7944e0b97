"""Check plugins.

Each module exposes ``sample``, ``evaluate``, ``perturb`` and ``adverse`` and
is registered in ``ustatlab/registry/checks.yaml``; the plain ``check_*``
functions can also be called directly on hand-built instances.
"""
