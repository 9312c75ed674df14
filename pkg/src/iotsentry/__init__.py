"""iotsentry: IoT access control and automated incident response for campus networks.

Onboards devices through role-gated approval, tails intrusion alerts from
Zeek-format notice logs, correlates them to registered devices, and blocks
critical offenders through a pfSense-compatible firewall control plane. A
scenario harness reproduces the detect-to-block latency decomposition with
configurable per-operation delays.
"""

__version__ = "0.1.0"
