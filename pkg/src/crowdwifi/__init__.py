"""Equilibrium engine for 5G pricing with a crowdsourced WiFi add-on."""
