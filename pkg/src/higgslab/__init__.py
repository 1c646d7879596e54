"""Numerical lab for cyclic Higgs bundles and the Hitchin equation on coordinate charts."""
