#pragma once

// Umbrella header for the class-similarity toolkit.

#include "clsim/augment.hpp"
#include "clsim/baseline.hpp"
#include "clsim/gain_model.hpp"
#include "clsim/image.hpp"
#include "clsim/image_io.hpp"
#include "clsim/manifest.hpp"
#include "clsim/parallel.hpp"
#include "clsim/set_similarity.hpp"
#include "clsim/ssim.hpp"
#include "clsim/subprocess_generator.hpp"
