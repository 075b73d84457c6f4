#include "doctest.h"

TEST_SUITE("container") {}
