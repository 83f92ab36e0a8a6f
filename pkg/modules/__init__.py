"""Domain modules: fields, noise, simulation, spectral analysis, transport, experiments.

Avoid importing heavy dependencies here; consumers should import submodules directly."""

__all__: list[str] = []
