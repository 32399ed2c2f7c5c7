"""citefuse: multi-view citation recommendation.

Learns text and citation-graph embeddings for papers, fuses them with CCA
or Deep CCA into a shared latent space, and ranks candidate citations by
cosine similarity.
"""

__version__ = "0.1.0"
