#pragma once

#include "clinaudit/attacks.hpp"
#include "clinaudit/calibration.hpp"
#include "clinaudit/dataset.hpp"
#include "clinaudit/dca.hpp"
#include "clinaudit/errors.hpp"
#include "clinaudit/explain.hpp"
#include "clinaudit/fairness.hpp"
#include "clinaudit/federated.hpp"
#include "clinaudit/metrics.hpp"
#include "clinaudit/model.hpp"
#include "clinaudit/privacy.hpp"
#include "clinaudit/report.hpp"
#include "clinaudit/rng.hpp"
#include "clinaudit/validation.hpp"
