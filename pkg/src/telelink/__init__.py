"""telelink: redundant dual-band datagram stack with monitoring and auto-recovery.

The package is organised around a connectionless transport (wire, transport),
its configuration (config), synthetic traffic (sources), a deterministic link
simulator (linksim, scenario), and the operations layer around it (telemetry,
sysmon, supervisor, safety).  `telelink.cli` ties everything into a command
line harness; `telelink.service` exposes the live feed and control surface.
"""

__version__ = "0.1.0"
