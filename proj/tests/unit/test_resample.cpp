#include "doctest.h"

TEST_SUITE("resample") {}
