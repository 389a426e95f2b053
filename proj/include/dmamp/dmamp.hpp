#pragma once

#include "dmamp/common.hpp"
#include "dmamp/consensus.hpp"
#include "dmamp/damping.hpp"
#include "dmamp/denoiser.hpp"
#include "dmamp/dist.hpp"
#include "dmamp/harness.hpp"
#include "dmamp/instance_io.hpp"
#include "dmamp/mamp.hpp"
#include "dmamp/model.hpp"
#include "dmamp/oamp.hpp"
#include "dmamp/spectral.hpp"
