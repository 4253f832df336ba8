"""ELM models, streaming trainers, NARX tooling and the synthetic plant."""
