#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "gradcheck_suite.hpp"

TEST_CASE("elementwise ops") { gradcheck::run_elementwise_ops(); }
TEST_CASE("distance reductions") { gradcheck::run_distance_reductions(); }
TEST_CASE("conv2d, bias, pooling, upsample") {
  gradcheck::run_conv_pool_upsample();
}
TEST_CASE("normalization layers") { gradcheck::run_normalization(); }
TEST_CASE("gram and slicing") { gradcheck::run_gram_and_slicing(); }
TEST_CASE("gan and cycle losses") { gradcheck::run_gan_and_cycle(); }
TEST_CASE("nst losses") { gradcheck::run_nst_losses(); }
TEST_CASE("end-to-end model losses") { gradcheck::run_end_to_end_losses(); }
TEST_CASE("detector loss") { gradcheck::run_detector_loss(); }
