import math

from rest_framework import serializers

from scenarios.runner import LOS_AOA, LOS_AOD, METHODS, NLOS_AOA, NLOS_AOD

HALF_PI = math.pi / 2


class SpeedListField(serializers.Field):
    """One angular speed or a list of them, in degrees per second."""
    default_error_messages = {
        'invalid': 'Expected a number or a list of numbers.',
        'empty': 'At least one speed is required.',
        'negative': 'Angular speeds must be nonnegative.',
    }

    def to_internal_value(self, data):
        values = data if isinstance(data, (list, tuple)) else [data]
        if not values:
            self.fail('empty')
        speeds = []
        for value in values:
            if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
                self.fail('invalid')
            if value < 0:
                self.fail('negative')
            speeds.append(float(value))
        return speeds

    def to_representation(self, value):
        return list(value)


def angle_field(default):
    return serializers.ListField(
        child=serializers.FloatField(min_value=-HALF_PI, max_value=HALF_PI),
        min_length=2, max_length=2, default=list(default.as_tuple()),
        help_text='[azimuth, elevation] in radians.',
    )


def positive(value, name):
    if not value > 0:
        raise serializers.ValidationError(f'{name} must be positive.')
    return value


class ManifestSerializer(serializers.Serializer):
    """Validates one scenario manifest; unknown keys are rejected."""
    method = serializers.ChoiceField(choices=METHODS + ('all',), default='beampattern')
    angular_speed_deg_s = SpeedListField(default=[100.0])
    seed = serializers.IntegerField(min_value=0, default=0)
    num_seeds = serializers.IntegerField(min_value=1, default=1)

    block_period_s = serializers.FloatField(default=0.01)
    duration_s = serializers.FloatField(min_value=0.0, default=0.1)
    sample_interval_s = serializers.FloatField(default=0.001)

    bs_side = serializers.IntegerField(min_value=1, default=16)
    ms_side = serializers.IntegerField(min_value=1, default=8)
    spacing_wl = serializers.FloatField(default=0.5)
    quant_bits = serializers.IntegerField(min_value=1, max_value=24, default=4)

    num_subcarriers = serializers.IntegerField(min_value=1, default=2048)
    num_pilots = serializers.IntegerField(min_value=1, default=341)
    noise_var = serializers.FloatField(default=1.0)
    estimation_noise = serializers.BooleanField(default=True)

    los_snr_db = serializers.FloatField(default=5.0)
    nlos_snr_db = serializers.FloatField(default=-8.0)
    include_nlos = serializers.BooleanField(default=True)
    los_aod = angle_field(LOS_AOD)
    los_aoa = angle_field(LOS_AOA)
    nlos_aod = angle_field(NLOS_AOD)
    nlos_aoa = angle_field(NLOS_AOA)

    perturbation_step = serializers.FloatField(default=0.7)
    pattern_fit = serializers.BooleanField(default=True)
    nine_beam_step = serializers.FloatField(default=0.22)
    codebook_az = serializers.IntegerField(min_value=1, default=16)
    codebook_el = serializers.IntegerField(min_value=1, default=8)

    carrier_hz = serializers.FloatField(default=73e9)
    bandwidth_hz = serializers.FloatField(default=2.5e9)

    output_dir = serializers.CharField(required=False, allow_blank=False)
    emit_per_seed = serializers.BooleanField(default=True)

    def to_internal_value(self, data):
        unknown = sorted(set(data) - set(self.fields))
        if unknown:
            raise serializers.ValidationError({key: ['Unknown field.'] for key in unknown})
        return super().to_internal_value(data)

    def validate_block_period_s(self, value):
        return positive(value, 'block_period_s')

    def validate_sample_interval_s(self, value):
        return positive(value, 'sample_interval_s')

    def validate_spacing_wl(self, value):
        return positive(value, 'spacing_wl')

    def validate_noise_var(self, value):
        return positive(value, 'noise_var')

    def validate_perturbation_step(self, value):
        return positive(value, 'perturbation_step')

    def validate_nine_beam_step(self, value):
        return positive(value, 'nine_beam_step')

    def validate(self, attrs):
        if attrs['sample_interval_s'] > attrs['block_period_s']:
            raise serializers.ValidationError(
                {'sample_interval_s': ['sample_interval_s must not exceed block_period_s.']}
            )
        if attrs['num_pilots'] > attrs['num_subcarriers']:
            raise serializers.ValidationError({'num_pilots': ['num_pilots must not exceed num_subcarriers.']})
        return attrs
