from hypothesis import settings

# SVD-heavy property tests run long on first execution; wall-clock
# deadlines only produce flaky failures here
settings.register_profile("spod", deadline=None, max_examples=50)
settings.load_profile("spod")
