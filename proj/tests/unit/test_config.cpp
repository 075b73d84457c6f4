#include "doctest.h"

TEST_SUITE("config") {}
