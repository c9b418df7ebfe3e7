"""Fixture generation: trains the dynamics, controller, barrier and synthetic
networks committed under fixtures/ and exports them in the network JSON
schema consumed by the certification package."""
