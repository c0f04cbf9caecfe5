# Event camera pixel bandwidth toolkit
