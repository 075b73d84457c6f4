#include "doctest.h"

TEST_SUITE("descatter") {}
