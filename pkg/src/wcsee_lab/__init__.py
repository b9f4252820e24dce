"""Worst-case secrecy energy efficiency lab.

Simulator and optimization toolkit for a secure UAV-mounted-RIS downlink:
channel synthesis, worst-case secrecy math under bounded CSI error, a
soft actor-critic trainer for joint power / phase / position control, and
a Dinkelbach-SCA block-coordinate benchmark.
"""

__version__ = "0.1.0"
