"""Computational modules: fields, flows, Poincaré maps, tail selection, sinks and splittings."""
