"""Exception hierarchy shared by every module."""


class GeoLangevinError(Exception):
    """Base class for all package errors."""


class RankDeficient(GeoLangevinError):
    """Constraint Jacobian lost full rank at the requested point."""


class OffSphere(GeoLangevinError):
    """Velocity does not have the required radius."""


class OffManifold(GeoLangevinError):
    """State is not on the model's state space within tolerance."""


class NoConvergence(GeoLangevinError):
    """Newton projection onto the manifold failed to converge."""


class SingularMetric(GeoLangevinError):
    """Induced metric is not positive definite (chart degenerates)."""


class ChartBoundary(GeoLangevinError):
    """Chart coordinate is too close to a coordinate singularity."""


class ParticleCollision(GeoLangevinError):
    """Two swarm particles are closer than the interaction allows."""


class NumericalBlowup(GeoLangevinError):
    """State left the overflow guard or became non-finite."""


class NoKnownStationary(GeoLangevinError):
    """Model has no closed-form stationary density."""


class InsufficientSamples(GeoLangevinError):
    """Too few samples for a statistical test."""


class MissingPartials(GeoLangevinError):
    """Test function lacks the derivatives needed by the generator."""


class ConfigError(GeoLangevinError):
    """Invalid model, simulation or run configuration."""
