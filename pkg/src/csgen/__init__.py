"""Code-switched text generation: corpora, CMI statistics, seq2seq and CycleGAN generators, LM evaluation."""

__version__ = "0.1.0"
