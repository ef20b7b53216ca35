"""Tele-operated robotic lung-ultrasound scanning simulator and tooling."""

__version__ = "0.1.0"
