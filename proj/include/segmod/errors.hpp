#pragma once

#include <stdexcept>

namespace segmod {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

#define SEGMOD_ERROR_TYPE(NAME) \
  struct NAME : Error {         \
    using Error::Error;         \
  }

// log_ingest
SEGMOD_ERROR_TYPE(MalformedRecord);
SEGMOD_ERROR_TYPE(InvalidIp);

// content_store
SEGMOD_ERROR_TYPE(InvalidRecord);

// user_store
SEGMOD_ERROR_TYPE(InvalidProfile);
SEGMOD_ERROR_TYPE(UnknownField);
SEGMOD_ERROR_TYPE(CorruptSnapshot);

// segment_dsl
SEGMOD_ERROR_TYPE(SyntaxError);
SEGMOD_ERROR_TYPE(TypeMismatch);

// vectorizer
SEGMOD_ERROR_TYPE(EmptyVocabulary);
SEGMOD_ERROR_TYPE(NoVisits);

// svm
SEGMOD_ERROR_TYPE(EmptySegment);
SEGMOD_ERROR_TYPE(NoNegativesAvailable);
SEGMOD_ERROR_TYPE(SingleClass);
SEGMOD_ERROR_TYPE(NonFiniteObjective);
SEGMOD_ERROR_TYPE(DimensionMismatch);
SEGMOD_ERROR_TYPE(VersionMismatch);
SEGMOD_ERROR_TYPE(CorruptModel);

// evaluator
SEGMOD_ERROR_TYPE(NoPositives);
SEGMOD_ERROR_TYPE(TooFewExamples);

// explainer
SEGMOD_ERROR_TYPE(EmptyCloud);

// syngen
SEGMOD_ERROR_TYPE(InvalidConfig);
SEGMOD_ERROR_TYPE(UnknownToken);

#undef SEGMOD_ERROR_TYPE

}  // namespace segmod
