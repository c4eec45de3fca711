#pragma once

#include "catalog_builders.hpp"

#include <gtest/gtest.h>

#include "fashionrec/error.hpp"

namespace fashionrec::testing {

template <typename Fn>
::testing::AssertionResult throws_code(Fn&& fn, ErrorCode code) {
  try {
    fn();
  } catch (const Error& e) {
    if (e.code() == code) return ::testing::AssertionSuccess();
    return ::testing::AssertionFailure() << "threw " << to_string(e.code()) << ": " << e.what();
  } catch (const std::exception& e) {
    return ::testing::AssertionFailure() << "threw non-library exception: " << e.what();
  }
  return ::testing::AssertionFailure() << "did not throw";
}

}  // namespace fashionrec::testing
