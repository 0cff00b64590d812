"""Cat AQEC - Simulation of autonomous and measurement-based error correction for cat-encoded cavity qubits."""

__version__ = "0.1.0"
