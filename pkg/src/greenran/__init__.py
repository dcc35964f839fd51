"""Probabilistic energy-efficiency tools for radio access networks.

Two workflows live here:

* beam tracking with a spatiotemporal Gaussian process and expected
  improvement (:mod:`greenran.beam_tracker`, :mod:`greenran.radio_env`);
* carrier switch-off driven by a learned load threshold
  (:mod:`greenran.carrier_switch`, :mod:`greenran.network_env`).

:mod:`greenran.harness` wires both into a reproducible command-line runner.
"""

__version__ = "0.1.0"
