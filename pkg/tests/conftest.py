import hypothesis

# scipy quadrature inside properties makes wall-clock deadlines flaky
hypothesis.settings.register_profile(
    "qsdflow", deadline=None, max_examples=50, derandomize=True
)
hypothesis.settings.load_profile("qsdflow")
