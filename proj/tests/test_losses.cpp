#include <gtest/gtest.h>
TEST(Placeholder_losses, Pending) { SUCCEED(); }
