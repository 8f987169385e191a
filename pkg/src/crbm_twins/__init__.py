"""Conditional restricted Boltzmann machines for longitudinal cohorts.

Train bidirectional CRBMs on mixed-type visit data, generate digital
subjects and digital twins, and measure how distinguishable generated
trajectories are from real ones.
"""

__version__ = "0.1.0"
