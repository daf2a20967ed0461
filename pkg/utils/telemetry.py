from opentelemetry import trace, metrics
from opentelemetry.sdk.trace import TracerProvider
from opentelemetry.sdk.trace.export import BatchSpanProcessor
from opentelemetry.sdk.metrics import MeterProvider
from opentelemetry.sdk.metrics.export import PeriodicExportingMetricReader
from opentelemetry.sdk.resources import Resource
from configuration.config import get_app_settings

app_settings = get_app_settings()


def configure_telemetry():
    """Configure OpenTelemetry tracing and metrics; export over OTLP only when an endpoint is set"""

    # Définir les attributs de ressource pour identifier le laboratoire
    resource = Resource.create({
        "service.name": app_settings.OTEL_SERVICE_NAME,
        "service.version": "0.1.0",
        "deployment.environment": app_settings.ENVIRONMENT.value
    })

    tracer_provider = TracerProvider(resource=resource)
    metric_readers = []

    if app_settings.OTLP_ENDPOINT:
        # Import tardif : l'exportateur gRPC n'est utile que si un collecteur est configuré
        from opentelemetry.exporter.otlp.proto.grpc.trace_exporter import OTLPSpanExporter
        from opentelemetry.exporter.otlp.proto.grpc.metric_exporter import OTLPMetricExporter

        tracer_provider.add_span_processor(BatchSpanProcessor(OTLPSpanExporter(endpoint=app_settings.OTLP_ENDPOINT)))
        metric_readers.append(PeriodicExportingMetricReader(
            exporter=OTLPMetricExporter(endpoint=app_settings.OTLP_ENDPOINT),
            export_interval_millis=10000
        ))

    trace.set_tracer_provider(tracer_provider)
    metrics.set_meter_provider(MeterProvider(resource=resource, metric_readers=metric_readers))

    return trace.get_tracer("shiftlab"), metrics.get_meter("shiftlab")


# Traceur et compteur globaux pour le laboratoire
tracer, meter = configure_telemetry()

attacked_steps_counter = meter.create_counter(
    name="shiftlab.attack.steps",
    description="Number of perturbed observations produced",
    unit="1"
)
episodes_counter = meter.create_counter(
    name="shiftlab.episodes",
    description="Number of evaluation episodes run",
    unit="1"
)
generation_time_histogram = meter.create_histogram(
    name="shiftlab.attack.generation_time",
    description="Time to generate one perturbed observation",
    unit="ms"
)
