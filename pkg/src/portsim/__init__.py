"""Port-logistics simulation and scheduling toolkit.

Modules: AIS/IoT ingest and synthetic traffic (ingest), ship-centred
feature grids (grid), RTA detection and ETA prediction (eta), berth
planning (berth), quay-side discrete-event simulation (sim), and the
portsim CLI (cli).
"""

__version__ = "0.1.0"
