"""
factory_boy factories of the toolkit's domain objects and run configurations.
"""
import factory
import numpy as np

from itsus.integrator import DynamicsConfig
from itsus.potentials import SurfaceSpec, make_surface
from itsus.tempering import ItsSchedule
from itsus.umbrella import UmbrellaWindow
from itsus.wham import WindowSamples


class SurfaceSpecFactory(factory.Factory):
    class Meta:
        model = SurfaceSpec

    name = "torsion-1d"
    params = factory.Dict({})


class DynamicsConfigFactory(factory.Factory):
    """
    A short trajectory recording every step.
    """

    class Meta:
        model = DynamicsConfig

    dt = 1.0
    temperature = 300.0
    friction = 0.01
    n_steps = 100
    record_stride = 1
    replicas = 1
    seed = factory.Sequence(lambda n: n + 1)


class ItsScheduleFactory(factory.Factory):
    """
    A flat weighted ladder; `temperatures` and `production_temperature` can be overridden.
    """

    class Meta:
        model = ItsSchedule

    temperatures = (273.0, 300.0, 350.0, 450.0)
    production_temperature = 300.0
    log_n = None

    @classmethod
    def _create(cls, model_class, *args, **kwargs):
        return model_class.from_temperatures(*args, **kwargs)

    _build = _create


class UmbrellaWindowFactory(factory.Factory):
    """
    A torsion window; pass `cv` to restrain another surface.
    """

    class Meta:
        model = UmbrellaWindow

    id = factory.Sequence(lambda n: n)
    cv = factory.LazyFunction(lambda: make_surface(SurfaceSpec("torsion-1d")).cv("phi"))
    center = 0.0
    force_constant = 45.0


class WindowSamplesFactory(factory.Factory):
    """
    Random harmonic samples of an unbiased window.
    """

    class Meta:
        model = WindowSamples

    class Params:
        n_samples = 1000

    window_id = factory.Sequence(lambda n: n)
    cvs = factory.LazyAttribute(
        lambda o: {"x": np.random.default_rng(o.window_id).standard_normal(o.n_samples)}
    )
    energy = factory.LazyAttribute(lambda o: 0.5 * o.cvs["x"] ** 2)
    window = None
    its = None


class SurfaceDataFactory(factory.DictFactory):
    name = "torsion-1d"


class DynamicsDataFactory(factory.DictFactory):
    temperature = 300
    n_steps = 200
    record_stride = 10


class RunConfigDataFactory(factory.DictFactory):
    """
    The plain data of a run configuration file, a plain MD run unless overridden.
    """

    name = factory.Sequence(lambda n: f"run-{n}")
    method = "md"
    seed = 7
    surface = factory.SubFactory(SurfaceDataFactory)
    dynamics = factory.SubFactory(DynamicsDataFactory)


class WindowsDataFactory(factory.DictFactory):
    cv = "phi"
    degrees = True
    range = factory.List([-180, 180])
    count = 4
    force_constant = 45


class ItsDataFactory(factory.DictFactory):
    ladder = factory.Dict({"min": 273, "max": 450, "count": 4})
    calibration = factory.Dict({"rounds": 2, "n_steps": 200})
