#pragma once

#include "mfchaos/chaos_metrics.hpp"
#include "mfchaos/concentration.hpp"
#include "mfchaos/experiments.hpp"
#include "mfchaos/girsanov.hpp"
#include "mfchaos/models.hpp"
#include "mfchaos/reference_law.hpp"
#include "mfchaos/sde_engine.hpp"
