# nahkit test suite
