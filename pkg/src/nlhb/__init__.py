"""HB-family shared-secret authentication: protocols, attacks, reductions.

Subpackage map:

- :mod:`nlhb.gf2core`    dense GF(2) arrays, randomness, serialization
- :mod:`nlhb.nlfunc`     nonlinear sliding-window response maps
- :mod:`nlhb.protocols`  HB / HB+ / NLHB / NLHB+ sessions and transcripts
- :mod:`nlhb.params`     exact acceptance-threshold tail probabilities
- :mod:`nlhb.cost`       prover-side operation counting
- :mod:`nlhb.attacks`    majority-vote, LF2 merge, noise-free selection
- :mod:`nlhb.reductions` embeddings, hybrid arguments, distinguisher drivers
- :mod:`nlhb.authsvc`    demo authentication service (TCP, framed)
- :mod:`nlhb.cli`        command-line front end
"""

__version__ = "0.1.0"
