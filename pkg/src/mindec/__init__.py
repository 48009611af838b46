"""Neural channel decoding by learned a-posteriori information.

A discriminator network is trained so that its logits equal the
a-posteriori information of each codeword (in nats). Decoding picks the
codeword with the smallest logit; the same logits yield estimates of the
source entropy, conditional entropy, mutual information and error
probability. Analytic MAP / MaxL / genie decoders serve as references.
"""

__version__ = "0.1.0"
