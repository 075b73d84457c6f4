#include "doctest.h"

TEST_SUITE("fft") {}
