#pragma once

#include "piidb/algebra.hpp"
#include "piidb/classify.hpp"
#include "piidb/component.hpp"
#include "piidb/errors.hpp"
#include "piidb/identity.hpp"
#include "piidb/infon.hpp"
#include "piidb/policy.hpp"
#include "piidb/scalar.hpp"
#include "piidb/schema.hpp"
#include "piidb/serialize.hpp"
#include "piidb/store.hpp"
#include "piidb/text.hpp"
#include "piidb/world.hpp"
