"""fairkit: tabular data to linkable RDF with provenance, FAIR Data Point metadata and FAIR assessment."""

__version__ = "0.1.0"
