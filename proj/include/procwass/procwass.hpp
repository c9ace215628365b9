#pragma once

#include "procwass/error.hpp"
#include "procwass/gaussian_metrics.hpp"
#include "procwass/latent_recovery.hpp"
#include "procwass/linalg.hpp"
#include "procwass/ot_core.hpp"
#include "procwass/procrustes_align.hpp"
#include "procwass/random.hpp"
