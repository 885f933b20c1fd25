#pragma once

#include <stdexcept>
#include <string>

namespace clgm {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define CLGM_DECLARE_ERROR(Name)            \
  class Name : public Error {               \
   public:                                  \
    using Error::Error;                     \
  }

CLGM_DECLARE_ERROR(NotPositiveDefinite);
CLGM_DECLARE_ERROR(NoConvergence);
CLGM_DECLARE_ERROR(DomainError);
CLGM_DECLARE_ERROR(ModeSearchFailure);
CLGM_DECLARE_ERROR(EmptyGrid);
CLGM_DECLARE_ERROR(EmptyList);
CLGM_DECLARE_ERROR(DegenerateSupport);
CLGM_DECLARE_ERROR(DimensionMismatch);
CLGM_DECLARE_ERROR(IndexError);
CLGM_DECLARE_ERROR(SingularTransform);
CLGM_DECLARE_ERROR(RankDeficient);
CLGM_DECLARE_ERROR(ConfigError);
CLGM_DECLARE_ERROR(IoError);
CLGM_DECLARE_ERROR(MissingParameter);

#undef CLGM_DECLARE_ERROR

}  // namespace clgm
