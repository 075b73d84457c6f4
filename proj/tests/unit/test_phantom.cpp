#include "doctest.h"

TEST_SUITE("phantom") {}
