namespace magelas {}
