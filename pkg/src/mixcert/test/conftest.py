"""
pytest 配置：hypothesis 使用固定种子的配置，保证每次运行抽到相同的样例
"""
from hypothesis import HealthCheck, settings

settings.register_profile(
    "mixcert",
    derandomize=True,
    deadline=None,
    max_examples=60,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.filter_too_much],
)
settings.load_profile("mixcert")
